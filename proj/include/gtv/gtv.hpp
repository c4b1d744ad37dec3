#pragma once

#include "gtv/types.hpp"
#include "gtv/random.hpp"
#include "gtv/covariance.hpp"
#include "gtv/graph.hpp"
#include "gtv/solver.hpp"
#include "gtv/owl.hpp"
#include "gtv/logistic.hpp"
#include "gtv/cv.hpp"
#include "gtv/synth.hpp"
#include "gtv/theory.hpp"
#include "gtv/harness.hpp"
