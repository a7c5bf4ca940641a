from smide.cli import main

main()
