#include "core/runner.hpp"
