#pragma once

#include "darec/autorec.hpp"
#include "darec/checkpoint.hpp"
#include "darec/cli.hpp"
#include "darec/config.hpp"
#include "darec/darec.hpp"
#include "darec/gradcheck.hpp"
#include "darec/harness.hpp"
#include "darec/kv.hpp"
#include "darec/matrix.hpp"
#include "darec/nn.hpp"
#include "darec/ratings.hpp"
#include "darec/rng.hpp"
