import sys

from cli.Application import main

if __name__ == '__main__':
    sys.exit(main())
