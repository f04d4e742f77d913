#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/denoiser.hpp"
#include "tokendiff/training.hpp"

namespace tokendiff {

/// Shortest decimal form of a double that parses back bit-exactly
/// (17 significant digits when needed).
std::string format_double(double value);

/// Writes via a temp file in the target directory, then renames.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

// Codebook file: "tokendiff-codebook v1 k=<K> d=<D> seed=<seed>" header,
// then K rows of D decimal values. Round-trips bit-exactly.
std::string codebook_to_text(const Codebook& cb);
Codebook codebook_from_text(const std::string& text);
void write_codebook(const std::filesystem::path& path, const Codebook& cb);
Codebook read_codebook(const std::filesystem::path& path);

// Dataset file: header "tokendiff-dataset v1 k=<K> records=<N>", then one
// "<condition>\t<tok,tok,...>" line per record.
struct Dataset {
  std::vector<TrainingRecord> records;
  int num_tokens = 0;
};
std::string dataset_to_text(std::span<const TrainingRecord> records, int num_tokens);
Dataset dataset_from_text(const std::string& text);
void write_dataset(const std::filesystem::path& path, std::span<const TrainingRecord> records,
                   int num_tokens);
Dataset read_dataset(const std::filesystem::path& path);

// Token output file: header "tokendiff-tokens v1 k=<K>", then one record per
// line: seed, plan digest, interior segment boundaries (N-1 values; the
// final segment ends at the token count), per-segment conditions, tokens.
// MASK is serialized as "M" (only corruption dumps contain it).
struct TokenRecord {
  uint64_t seed = 0;
  uint64_t plan_digest = 0;
  std::vector<int64_t> boundaries;  // interior separators
  std::vector<int32_t> conditions;  // one per segment
  std::vector<int32_t> tokens;
};
struct TokenFile {
  std::vector<TokenRecord> records;
  int num_tokens = 0;
};
std::string tokens_to_text(std::span<const TokenRecord> records, int num_tokens);
TokenFile tokens_from_text(const std::string& text);
void write_tokens(const std::filesystem::path& path, std::span<const TokenRecord> records,
                  int num_tokens);
TokenFile read_tokens(const std::filesystem::path& path);

TokenRecord token_record_from_sequence(const TokenSequence& seq, uint64_t seed, uint64_t digest);
TokenSequence sequence_from_token_record(const TokenRecord& record);

// Model file: header "tokendiff-model v1 v=<V> b=<B> k=<K> t=<T> mask=<K>
// edge=<K+1>", then one line of K logits per context in parameter order.
// Round-trips bit-exactly.
std::string model_to_text(const TabularDenoiser& model);
TabularDenoiser model_from_text(const std::string& text);
void write_model(const std::filesystem::path& path, const TabularDenoiser& model);
TabularDenoiser read_model(const std::filesystem::path& path);

}  // namespace tokendiff
