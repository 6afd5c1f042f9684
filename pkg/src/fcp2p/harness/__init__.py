"""Day simulation, demand data, benchmarking, reporting and the command line."""
