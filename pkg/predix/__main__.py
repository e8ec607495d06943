from predix.cli import main


main()
