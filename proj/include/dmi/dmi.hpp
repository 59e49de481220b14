#pragma once

#include "dmi/analysis.hpp"
#include "dmi/densela.hpp"
#include "dmi/error.hpp"
#include "dmi/lmi.hpp"
#include "dmi/plants.hpp"
#include "dmi/sdp.hpp"
#include "dmi/synth/common.hpp"
#include "dmi/synth/dilated.hpp"
#include "dmi/synth/multiobjective.hpp"
#include "dmi/synth/output_feedback.hpp"
#include "dmi/synth/search.hpp"
#include "dmi/synth/state_feedback.hpp"
#include "dmi/system.hpp"
