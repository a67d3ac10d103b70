#pragma once

#include "walklab/branch.hpp"
#include "walklab/common.hpp"
#include "walklab/config.hpp"
#include "walklab/dimension.hpp"
#include "walklab/interval.hpp"
#include "walklab/markov_map.hpp"
#include "walklab/partition.hpp"
#include "walklab/renorm.hpp"
#include "walklab/rng.hpp"
#include "walklab/simulate.hpp"
#include "walklab/spectral.hpp"
#include "walklab/stability.hpp"
#include "walklab/walk.hpp"
