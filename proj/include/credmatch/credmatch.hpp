#pragma once

#include "credmatch/config.hpp"
#include "credmatch/encoding.hpp"
#include "credmatch/error.hpp"
#include "credmatch/gmp_util.hpp"
#include "credmatch/hash.hpp"
#include "credmatch/keyio.hpp"
#include "credmatch/matching.hpp"
#include "credmatch/net.hpp"
#include "credmatch/paillier.hpp"
#include "credmatch/polyeval.hpp"
#include "credmatch/rng.hpp"
#include "credmatch/session.hpp"
#include "credmatch/wire.hpp"
