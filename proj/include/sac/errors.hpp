#pragma once

#include <stdexcept>

namespace sac {

// A second differing write to the same modifiable within one epoch.
struct WriteOnceViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// A read (or block get) of a modifiable that has never been written.
struct UnwrittenRead : std::logic_error {
  using std::logic_error::logic_error;
};

// Anything that breaks a structural precondition: attaching into an occupied
// slot, duplicate reader registration, primitives called outside a scope, …
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace sac
