#pragma once

// Umbrella header: the complete toolkit — cell parameterization, two-fidelity
// voltage simulation, uncertainty injection, sensitivity/information
// analysis, excitation design, health estimation, and experiment
// orchestration.

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"
#include "sohkit/design.hpp"
#include "sohkit/estimation.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/experiment.hpp"
#include "sohkit/fisher.hpp"
#include "sohkit/levmar.hpp"
#include "sohkit/ocp_curve.hpp"
#include "sohkit/ocp_model.hpp"
#include "sohkit/parallel.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/pso.hpp"
#include "sohkit/random.hpp"
#include "sohkit/report.hpp"
#include "sohkit/sensitivity.hpp"
#include "sohkit/spme.hpp"
#include "sohkit/trajectory.hpp"
#include "sohkit/uncertainty.hpp"
