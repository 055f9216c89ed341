# Reporting module: score tables, curves and aux-head diagnostics
