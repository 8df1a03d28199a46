#pragma once

#include "bigint.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "montgomery.hpp"
#include "isogeny.hpp"
#include "protocol.hpp"
#include "faultsim.hpp"
#include "attack.hpp"
#include "countermeasure.hpp"
#include "campaign.hpp"
