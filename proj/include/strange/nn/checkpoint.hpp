#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "strange/nn/parameter.hpp"
#include "strange/nn/tensor.hpp"

namespace strange::nn {

inline constexpr int kCheckpointVersion = 1;

/// A checkpoint is a sequence of blocks. Each block starts with one text
/// header line:
///
///   SMCK <version> tensors <module> <count> <name>:<shape> ...
///   SMCK <version> text <module> <byte-count>
///
/// A tensor block is followed by the little-endian float32 contents of each
/// tensor in header order; a text block by exactly <byte-count> bytes.
struct CheckpointBlock {
  std::string kind;
  std::string module;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string text;
};

class CheckpointWriter {
 public:
  explicit CheckpointWriter(std::ostream& os) : os_(os) {}

  void tensors(const std::string& module, const std::vector<std::pair<std::string, const Tensor*>>& items);
  void params(const std::string& module, const ParameterList& params);
  void text(const std::string& module, const std::string& body);

 private:
  std::ostream& os_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(std::istream& is) : is_(is) {}

  /// Next block, or nullopt at a clean end of stream. Throws IoError on a
  /// malformed header, a version mismatch or a truncated payload.
  std::optional<CheckpointBlock> next();
  /// Next block, which must have the given kind and module name.
  CheckpointBlock expect(const std::string& kind, const std::string& module);
  /// Reads a tensor block and copies it into `params`; names and shapes must
  /// match the parameter list exactly.
  void load_params(const std::string& module, const ParameterList& params);

 private:
  std::istream& is_;
};

}  // namespace strange::nn
