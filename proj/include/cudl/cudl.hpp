#pragma once

#include "cudl/censoring_tree.hpp"
#include "cudl/config.hpp"
#include "cudl/cox.hpp"
#include "cudl/csv.hpp"
#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/evaluation.hpp"
#include "cudl/kaplan_meier.hpp"
#include "cudl/logrank.hpp"
#include "cudl/losses.hpp"
#include "cudl/methods.hpp"
#include "cudl/model_io.hpp"
#include "cudl/network.hpp"
#include "cudl/parallel.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/rng.hpp"
#include "cudl/simulation.hpp"
#include "cudl/special.hpp"
#include "cudl/survival_forest.hpp"
#include "cudl/transforms.hpp"
