#pragma once

// Subcommand entry points shared by the C API and the CLI. Filled in as the
// modules land.

namespace celnet::runner {}
