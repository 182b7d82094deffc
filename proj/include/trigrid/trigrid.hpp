// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "trigrid/alignment.hpp"
#include "trigrid/camera.hpp"
#include "trigrid/common.hpp"
#include "trigrid/decoder.hpp"
#include "trigrid/fitting.hpp"
#include "trigrid/gradcheck.hpp"
#include "trigrid/io.hpp"
#include "trigrid/meshing.hpp"
#include "trigrid/parallel.hpp"
#include "trigrid/render.hpp"
#include "trigrid/rng.hpp"
#include "trigrid/scene.hpp"
#include "trigrid/synthdata.hpp"
#include "trigrid/tri_grid.hpp"
