#pragma once

// Umbrella header.

#include "corel/errors.hpp"
#include "corel/matstat.hpp"
#include "corel/lqg_model.hpp"
#include "corel/simulate.hpp"
#include "corel/repr_learn.hpp"
#include "corel/latent_id.hpp"
#include "corel/control_eval.hpp"
#include "corel/diagnostics.hpp"
#include "corel/pipeline.hpp"
#include "corel/io.hpp"
