#pragma once

#include <memory>
#include <string>

#include "embfair/model.hpp"

namespace embfair {

// Client backend that speaks a small JSON-over-HTTP protocol to an external
// model server:
//   GET  /meta                  -> {"backend": str, "dim": int, "vocab": [str]}
//   POST /distribution         {"context":[ids]} -> {"probs":[...]}
//   POST /hidden               {"context":[ids]} -> {"states":[[...],...]}
//   GET  /embedding/<id>        -> {"row":[...]}
//   PUT  /embedding/<id>       {"row":[...]} -> {}
//   GET  /fingerprint           -> {"digest": hex}
// The server decides which of its parameters count as knowledge (K) when it
// reports the fingerprint; gradients are not available, so debiasing a remote
// model is an unsupported operation. Nothing in the toolkit's correctness
// depends on this backend.
std::unique_ptr<LanguageModel> open_http_model(const std::string& base_url);

}  // namespace embfair
