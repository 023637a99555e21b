#pragma once

#include "gsketch/bench.hpp"
#include "gsketch/count_min.hpp"
#include "gsketch/engine.hpp"
#include "gsketch/error.hpp"
#include "gsketch/partitioner.hpp"
#include "gsketch/random.hpp"
#include "gsketch/stream.hpp"
