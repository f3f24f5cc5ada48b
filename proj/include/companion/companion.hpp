#pragma once

// Umbrella header for the companion-gym library.

#include "companion/catalog.hpp"
#include "companion/dates.hpp"
#include "companion/episode.hpp"
#include "companion/errors.hpp"
#include "companion/eval.hpp"
#include "companion/fraction.hpp"
#include "companion/instance.hpp"
#include "companion/memory.hpp"
#include "companion/money.hpp"
#include "companion/product_index.hpp"
#include "companion/prompts.hpp"
#include "companion/protocol.hpp"
#include "companion/rewards.hpp"
#include "companion/rng.hpp"
#include "companion/scripted_policies.hpp"
#include "companion/synth.hpp"
#include "companion/text.hpp"
#include "companion/trajectory.hpp"
