#pragma once

// Umbrella header: the trace model, the propagation engine, and the
// introspection tools.  Benchmark apps live under sac/apps/, the CLI
// harness under sac/bench/.

#include "sac/core.hpp"
#include "sac/engine.hpp"
#include "sac/errors.hpp"
#include "sac/metrics.hpp"
#include "sac/reader_set.hpp"
#include "sac/scheduler.hpp"
