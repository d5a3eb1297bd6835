#pragma once

#include "crowdforge/adam.hpp"
#include "crowdforge/aggregation.hpp"
#include "crowdforge/analysis.hpp"
#include "crowdforge/artifact.hpp"
#include "crowdforge/crowd_layer.hpp"
#include "crowdforge/csv_io.hpp"
#include "crowdforge/data.hpp"
#include "crowdforge/error.hpp"
#include "crowdforge/gradcheck.hpp"
#include "crowdforge/lsl_loss.hpp"
#include "crowdforge/metrics.hpp"
#include "crowdforge/mlp.hpp"
#include "crowdforge/parameter_store.hpp"
#include "crowdforge/rng.hpp"
#include "crowdforge/selectors.hpp"
#include "crowdforge/synthetic.hpp"
#include "crowdforge/tape.hpp"
#include "crowdforge/training.hpp"
