# Main package
