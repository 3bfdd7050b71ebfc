#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "sgg/graph/io.hpp"
#include "sgg/numerics/params.hpp"

namespace sgg {

/// Flat map from parameter name to {"shape": [rows, cols], "data": [...]}.
template <class Bundle>
json checkpoint_json(const Bundle& values) {
  json j = json::object();
  visit_params(
      [&](const std::string& name, const Matrix& m) {
        j[name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
      },
      values);
  return j;
}

/// Overwrites every leaf of `into` from `j`. Names and shapes must match
/// exactly; extra or missing names are schema errors.
template <class Bundle>
void load_checkpoint_json(const json& j, Bundle& into) {
  if (!j.is_object()) throw SchemaError("", "checkpoint must be a JSON object");
  std::set<std::string> expected;
  visit_params(
      [&](const std::string& name, Matrix& m) {
        expected.insert(name);
        auto it = j.find(name);
        if (it == j.end()) throw SchemaError(name, "missing parameter");
        const json& shape = detail::field(*it, name, "shape");
        if (!shape.is_array() || shape.size() != 2) throw SchemaError(name + ".shape", "expected [rows, cols]");
        const std::size_t rows = detail::as_index(shape[0], name + ".shape[0]");
        const std::size_t cols = detail::as_index(shape[1], name + ".shape[1]");
        if (rows != m.rows() || cols != m.cols()) {
          throw SchemaError(name + ".shape", "expected " + m.shape_string() + ", got " + std::to_string(rows) + "x" +
                                                 std::to_string(cols));
        }
        m = Matrix(rows, cols, detail::as_reals(detail::field(*it, name, "data"), name + ".data"));
      },
      into);
  for (const auto& item : j.items()) {
    if (!expected.count(item.key())) throw SchemaError(item.key(), "unknown parameter");
  }
}

template <class Bundle>
void save_checkpoint(const Bundle& values, const std::filesystem::path& path) {
  write_text_file(path, dump(checkpoint_json(values)));
}

template <class Bundle>
void load_checkpoint(const std::filesystem::path& path, Bundle& into) {
  load_with_path(path, [&](const json& j) {
    load_checkpoint_json(j, into);
    return 0;
  });
}

}  // namespace sgg
