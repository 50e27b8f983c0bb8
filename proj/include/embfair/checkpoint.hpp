#pragma once

#include <map>
#include <memory>
#include <string>

#include "embfair/common.hpp"
#include "embfair/toy_model.hpp"

namespace embfair {

// Checkpoint container: a one-line magic, a structured-text (JSON) header
// carrying backend name, dimensions, vocabulary and the parameter manifest,
// then raw little-endian float32 tensor data in manifest order.
void save_checkpoint(const ToyTransformer& model, const std::string& path);
std::unique_ptr<ToyTransformer> load_checkpoint(const std::string& path);

// Embedding patch: same container shape, but the manifest lists only patched
// rows keyed by token id.
void save_embedding_patch(const std::map<int, Vec>& rows, const Vocabulary& vocab, int dim,
                          const std::string& path);
std::map<int, Vec> load_embedding_patch(const std::string& path, const Vocabulary& vocab,
                                        int dim);

}  // namespace embfair
