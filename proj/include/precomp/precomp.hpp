#pragma once

#include "precomp/admm.hpp"
#include "precomp/codec.hpp"
#include "precomp/degradation.hpp"
#include "precomp/experiment.hpp"
#include "precomp/external_codec.hpp"
#include "precomp/metrics.hpp"
#include "precomp/operator_spec.hpp"
#include "precomp/pseudoinverse.hpp"
#include "precomp/signal.hpp"
#include "precomp/signal_io.hpp"
#include "precomp/synthetic.hpp"
