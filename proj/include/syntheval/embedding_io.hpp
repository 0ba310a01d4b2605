#pragma once

#include <fstream>
#include <set>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "syntheval/error.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// Embedding exchange format:
//   {"dim": D, "items": [{"subject_id": s, "slice_index": k,
//                         "modality": "T1", "vector": [..D reals..]}, ...]}
// Loading is order-preserving; duplicate (subject, slice, modality) keys and
// all-zero vectors are rejected.

inline EmbeddingBatch parse_embeddings(const nlohmann::json& j, const std::string& origin) {
  EmbeddingBatch batch;
  try {
    require(j.is_object() && j.contains("dim") && j.contains("items"), errc::format_error,
            origin + ": expected object with 'dim' and 'items'");
    batch.dim = j.at("dim").get<int>();
    require(batch.dim > 0, errc::format_error, origin + ": dim must be positive");

    std::set<std::tuple<std::string, int, std::string>> seen;
    for (const auto& item : j.at("items")) {
      EmbeddingItem e;
      e.subject_id = item.at("subject_id").get<std::string>();
      e.slice_index = item.at("slice_index").get<int>();
      e.modality = parse_modality(item.at("modality").get<std::string>());
      e.vector = item.at("vector").get<std::vector<double>>();

      const std::size_t idx = batch.items.size();
      require(static_cast<int>(e.vector.size()) == batch.dim, errc::format_error,
              origin + ": item " + std::to_string(idx) + " vector length " +
                  std::to_string(e.vector.size()) + " != dim " + std::to_string(batch.dim));

      double norm_sq = 0.0;
      for (double x : e.vector) norm_sq += x * x;
      require(norm_sq > 0.0, errc::degenerate_vector,
              origin + ": item " + std::to_string(idx) + " is the zero vector");

      auto key = std::make_tuple(e.subject_id, e.slice_index,
                                 std::string(modality_name(e.modality)));
      require(seen.insert(key).second, errc::duplicate_item,
              origin + ": duplicate (subject, slice, modality) = (" + e.subject_id + ", " +
                  std::to_string(e.slice_index) + ", " + modality_name(e.modality) + ")");
      batch.items.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(errc::format_error, origin + ": " + ex.what());
  }
  return batch;
}

inline EmbeddingBatch read_embeddings(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), errc::io_error, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    fail(errc::format_error, path + ": " + ex.what());
  }
  return parse_embeddings(j, path);
}

inline nlohmann::json embeddings_to_json(const EmbeddingBatch& batch) {
  batch.validate();
  nlohmann::json j;
  j["dim"] = batch.dim;
  j["items"] = nlohmann::json::array();
  for (const auto& e : batch.items) {
    j["items"].push_back({{"subject_id", e.subject_id},
                          {"slice_index", e.slice_index},
                          {"modality", modality_name(e.modality)},
                          {"vector", e.vector}});
  }
  return j;
}

inline void write_embeddings(const EmbeddingBatch& batch, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out << embeddings_to_json(batch).dump(2) << "\n";
}

}  // namespace syntheval
