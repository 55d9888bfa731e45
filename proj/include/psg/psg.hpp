#pragma once

#include "psg/checkpoint.hpp"
#include "psg/clustering.hpp"
#include "psg/commands.hpp"
#include "psg/common.hpp"
#include "psg/config.hpp"
#include "psg/evaluation.hpp"
#include "psg/gradients.hpp"
#include "psg/graph.hpp"
#include "psg/losses.hpp"
#include "psg/matrix.hpp"
#include "psg/model.hpp"
#include "psg/optimizer.hpp"
#include "psg/path_features.hpp"
#include "psg/rng.hpp"
#include "psg/training.hpp"
