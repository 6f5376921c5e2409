from beamsteer.cli import main

main()
