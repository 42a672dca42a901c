#pragma once

#include "ehl/baselines.hpp"
#include "ehl/env.hpp"
#include "ehl/harness/config.hpp"
#include "ehl/harness/experiment.hpp"
#include "ehl/harness/kb_io.hpp"
#include "ehl/harness/metrics.hpp"
#include "ehl/harness/tasks.hpp"
#include "ehl/lifelong.hpp"
#include "ehl/rl.hpp"
#include "ehl/rng.hpp"
