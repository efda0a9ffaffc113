#pragma once

#include "butler/butler_scenario.hpp"
#include "butler/demo_io.hpp"
#include "butler/error.hpp"
#include "butler/frame_io.hpp"
#include "butler/gmm.hpp"
#include "butler/gmr.hpp"
#include "butler/manager.hpp"
#include "butler/perception.hpp"
#include "butler/scenario.hpp"
#include "butler/synthetic.hpp"
#include "butler/trajectory.hpp"
