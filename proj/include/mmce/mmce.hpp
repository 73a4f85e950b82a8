#pragma once

#include "mmce/baselines.hpp"
#include "mmce/bench.hpp"
#include "mmce/channel.hpp"
#include "mmce/io.hpp"
#include "mmce/rng.hpp"
#include "mmce/sounding.hpp"
#include "mmce/ssd.hpp"
