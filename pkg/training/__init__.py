# Training module: losses, model, optimizer, epoch loop and experiment runner
