#pragma once

#include "cfgconf/collapse.hpp"
#include "cfgconf/diagnostics.hpp"
#include "cfgconf/dot_io.hpp"
#include "cfgconf/draw_graph.hpp"
#include "cfgconf/filter.hpp"
#include "cfgconf/geometry.hpp"
#include "cfgconf/graph_model.hpp"
#include "cfgconf/layout.hpp"
#include "cfgconf/pipeline.hpp"
#include "cfgconf/render.hpp"
#include "cfgconf/resolve.hpp"
#include "cfgconf/spec_model.hpp"
