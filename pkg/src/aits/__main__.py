from aits.cli import entry

entry()
