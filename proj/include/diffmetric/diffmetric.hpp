#pragma once

#include "diffmetric/common.hpp"
#include "diffmetric/config.hpp"
#include "diffmetric/dataset.hpp"
#include "diffmetric/diffusion.hpp"
#include "diffmetric/dynamics.hpp"
#include "diffmetric/experiment.hpp"
#include "diffmetric/geometry.hpp"
#include "diffmetric/linalg.hpp"
#include "diffmetric/models.hpp"
#include "diffmetric/rng.hpp"
#include "diffmetric/synth.hpp"
