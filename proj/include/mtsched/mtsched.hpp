#pragma once

// Umbrella header.
#include "mtsched/baselines.hpp"
#include "mtsched/experiment.hpp"
#include "mtsched/ga.hpp"
#include "mtsched/model.hpp"
#include "mtsched/oracle.hpp"
#include "mtsched/penalty.hpp"
#include "mtsched/rng.hpp"
#include "mtsched/sim.hpp"
#include "mtsched/workload.hpp"
