#pragma once

#include "kae/error.hpp"
#include "kae/ndcore.hpp"
#include "kae/layers.hpp"
#include "kae/model.hpp"
#include "kae/optim.hpp"
#include "kae/checkpoint.hpp"
#include "kae/data.hpp"
#include "kae/eval.hpp"
#include "kae/records.hpp"
#include "kae/experiment.hpp"
