#pragma once

namespace knnmt {

/// Project version with the git-describe suffix of the build tree.
const char* version();

}  // namespace knnmt
