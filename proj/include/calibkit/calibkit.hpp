#pragma once

#include "calibkit/error.hpp"
#include "calibkit/core.hpp"
#include "calibkit/model.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/optim.hpp"
#include "calibkit/calibrate.hpp"
#include "calibkit/synthetic.hpp"
#include "calibkit/io.hpp"
#include "calibkit/serialize.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/sweep.hpp"
#include "calibkit/cli.hpp"
