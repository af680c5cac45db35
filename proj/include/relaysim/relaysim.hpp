#pragma once

#include "relaysim/antenna.hpp"
#include "relaysim/channel.hpp"
#include "relaysim/config.hpp"
#include "relaysim/dft.hpp"
#include "relaysim/error.hpp"
#include "relaysim/geometry.hpp"
#include "relaysim/link_engine.hpp"
#include "relaysim/mac_phy.hpp"
#include "relaysim/relay.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/scenario.hpp"
#include "relaysim/simcore.hpp"
#include "relaysim/traffic_metrics.hpp"
#include "relaysim/units.hpp"
