#include "knnmt/version.hpp"

#ifndef KNNMT_VERSION
#define KNNMT_VERSION "unknown"
#endif

namespace knnmt {

const char* version() { return KNNMT_VERSION; }

}  // namespace knnmt
