#pragma once

#include "errors.hpp"
#include "common.hpp"
#include "droop.hpp"
#include "smib.hpp"
#include "modal.hpp"
#include "network.hpp"
#include "sync_machine.hpp"
#include "dfig.hpp"
#include "power_system.hpp"
#include "kundur.hpp"
#include "simulation.hpp"
#include "ringdown.hpp"
#include "scenario.hpp"
#include "report.hpp"
