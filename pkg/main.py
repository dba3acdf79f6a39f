"""
This is the main file for the project.
"""
import sys

from cli.cli_commands import run


def main():
    """
    Main function of the application.

    This function should:
    1. Parse the command line and run the requested command.
    2. Exit with that command's exit code.
    """
    sys.exit(run())


if __name__ == "__main__":
    main()
