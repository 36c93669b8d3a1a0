from funcar.cli import main

raise SystemExit(main())
