#pragma once

#include <stdexcept>
#include <string>

namespace mc {

// Error taxonomy for the whole library. Internal code throws; the C API
// boundary maps each type onto a stable status code.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : error {   // tensor dimension mismatch
  using error::error;
};
struct value_error : error {   // argument / contract violation
  using error::error;
};
struct data_error : error {    // corpus, checkpoint or config content problems
  using error::error;
};
struct io_error : error {      // filesystem failures
  using error::error;
};

}  // namespace mc

#define MC_CHECK(cond, msg) \
  do {                      \
    if (!(cond)) throw ::mc::value_error(msg); \
  } while (0)

#define MC_CHECK_SHAPE(cond, msg) \
  do {                            \
    if (!(cond)) throw ::mc::shape_error(msg); \
  } while (0)
