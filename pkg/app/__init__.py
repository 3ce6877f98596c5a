"""Command-line application: settings, data bundles and subcommands."""
