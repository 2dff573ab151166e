#pragma once

// Umbrella header: the full annealing-protocol toolkit.

#include "qanneal/commands.hpp"
#include "qanneal/config.hpp"
#include "qanneal/control.hpp"
#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/io.hpp"
#include "qanneal/linalg.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/parallel.hpp"
#include "qanneal/pmp.hpp"
#include "qanneal/rng.hpp"
#include "qanneal/robustness.hpp"
#include "qanneal/version.hpp"
