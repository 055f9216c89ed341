#!/usr/bin/env python3
"""
Test script to verify the training engine setup
"""

import os
import sys


def check_imports():
    """Check that the required packages can be imported"""
    print("Testing imports...")

    for package, label in (("numpy", "NumPy"), ("pydantic", "Pydantic"), ("dotenv", "python-dotenv")):
        try:
            __import__(package)
            print(f"✓ {label} imported successfully")
        except ImportError as e:
            print(f"✗ {label} import failed: {e}")
            return False

    return True


def check_config():
    """Check configuration loading and the data root"""
    print("\nTesting configuration...")

    try:
        from config import Config
        config = Config()
        print("✓ Configuration loaded successfully")

        missing = [key for key in ("latin", "arabic", "kannada") if not os.path.isdir(config.data_dir(key))]
        if missing:
            print(f"⚠ No data directories for: {', '.join(missing)} under {config.MTL_DATA_DIR}")
            print("   Set MTL_DATA_DIR in your .env file or pass --<script>-dir flags")
        else:
            print("✓ Data directories found")
        return True

    except Exception as e:
        print(f"✗ Configuration test failed: {e}")
        return False


def check_modules():
    """Check that the application modules can be imported"""
    print("\nTesting application modules...")

    modules = [
        ("ingestion.ingestion_service", "IngestionService"),
        ("training.training_service", "TrainingService"),
        ("reporting.report_service", "ReportService"),
        ("main", "CliConfig"),
    ]
    for module, name in modules:
        try:
            getattr(__import__(module, fromlist=[name]), name)
            print(f"✓ {name} imported successfully")
        except Exception as e:
            print(f"✗ {name} import failed: {e}")
            return False

    return True


def test_setup():
    assert check_imports()
    assert check_config()
    assert check_modules()


def main():
    """Run all checks"""
    print("Multi-task Grid Training Setup Test")
    print("=" * 40)

    if not check_imports():
        print("\n❌ Import test failed. Please install missing dependencies:")
        print("   uv pip install -r requirements.txt")
        sys.exit(1)

    if not check_config():
        print("\n❌ Configuration test failed. Please check your .env file.")
        sys.exit(1)

    if not check_modules():
        print("\n❌ Module test failed. Please check the application structure.")
        sys.exit(1)

    print("\n✅ All checks passed! The training engine is ready to run.")
    print("\nNext steps:")
    print("1. Inspect the data: python main.py inspect")
    print("2. Train a model: python main.py train --model new --spec 3x10")
    print("3. Build the score table: python main.py report runs/*")


if __name__ == "__main__":
    main()
