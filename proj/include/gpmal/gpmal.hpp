#pragma once

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/eval_harness.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/matrix.hpp"
#include "gpmal/moead.hpp"
#include "gpmal/neighbors.hpp"
#include "gpmal/objectives.hpp"
#include "gpmal/random.hpp"
#include "gpmal/variation.hpp"
