#include "fpz/rng.hpp"

// All of the generator is header-inline; this TU exists so the library has a
// stable object for the module and a place for future non-inline additions.
namespace fpz::rng {}
