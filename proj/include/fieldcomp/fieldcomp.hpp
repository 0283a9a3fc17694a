#pragma once

// Umbrella header for the field-compensation toolkit.

#include "fieldcomp/errors.hpp"
#include "fieldcomp/vec3.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/linalg.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/simulator.hpp"
#include "fieldcomp/pca.hpp"
#include "fieldcomp/ann.hpp"
#include "fieldcomp/metrics.hpp"
#include "fieldcomp/io.hpp"
#include "fieldcomp/config.hpp"
