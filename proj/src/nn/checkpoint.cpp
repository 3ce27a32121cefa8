#include "strange/nn/checkpoint.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <sstream>

#include "strange/errors.hpp"

namespace strange::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

std::string shape_token(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

Shape parse_shape(const std::string& token) {
  Shape shape;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const int d = std::stoi(part, &used);
      if (used != part.size() || d <= 0) throw IoError("bad dimension");
      shape.push_back(d);
    } catch (const std::logic_error&) {
      throw IoError("checkpoint: malformed shape '" + token + "'");
    }
  }
  if (shape.empty() || shape.size() > 3) throw IoError("checkpoint: malformed shape '" + token + "'");
  return shape;
}

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" :\n") != std::string::npos) {
    throw UsageError("checkpoint: invalid block or tensor name '" + name + "'");
  }
}

}  // namespace

void CheckpointWriter::tensors(const std::string& module,
                               const std::vector<std::pair<std::string, const Tensor*>>& items) {
  check_name(module);
  os_ << "SMCK " << kCheckpointVersion << " tensors " << module << ' ' << items.size();
  for (const auto& [name, t] : items) {
    check_name(name);
    os_ << ' ' << name << ':' << shape_token(t->shape());
  }
  os_ << '\n';
  for (const auto& item : items) {
    os_.write(reinterpret_cast<const char*>(item.second->data()),
              static_cast<std::streamsize>(item.second->size() * sizeof(float)));
  }
  if (!os_) throw IoError("checkpoint: write failed");
}

void CheckpointWriter::params(const std::string& module, const ParameterList& params) {
  std::vector<std::pair<std::string, const Tensor*>> items;
  items.reserve(params.size());
  for (const auto& p : params) items.emplace_back(p.name, &p.param->value);
  tensors(module, items);
}

void CheckpointWriter::text(const std::string& module, const std::string& body) {
  check_name(module);
  os_ << "SMCK " << kCheckpointVersion << " text " << module << ' ' << body.size() << '\n' << body;
  if (!os_) throw IoError("checkpoint: write failed");
}

std::optional<CheckpointBlock> CheckpointReader::next() {
  std::string line;
  if (!std::getline(is_, line)) return std::nullopt;
  std::istringstream hs(line);
  std::string magic, kind;
  int version = 0;
  CheckpointBlock block;
  if (!(hs >> magic >> version >> kind >> block.module) || magic != "SMCK") {
    throw IoError("checkpoint: corrupted block header");
  }
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  block.kind = kind;
  if (kind == "text") {
    std::size_t bytes = 0;
    if (!(hs >> bytes)) throw IoError("checkpoint: corrupted text header");
    block.text.resize(bytes);
    is_.read(block.text.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(is_.gcount()) != bytes) throw IoError("checkpoint: truncated text block");
    return block;
  }
  if (kind != "tensors") throw IoError("checkpoint: unknown block kind '" + kind + "'");
  std::size_t count = 0;
  if (!(hs >> count)) throw IoError("checkpoint: corrupted tensor header");
  std::vector<std::pair<std::string, Shape>> table;
  for (std::size_t i = 0; i < count; ++i) {
    std::string entry;
    if (!(hs >> entry)) throw IoError("checkpoint: shape table shorter than declared");
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos) throw IoError("checkpoint: malformed shape entry '" + entry + "'");
    table.emplace_back(entry.substr(0, colon), parse_shape(entry.substr(colon + 1)));
  }
  std::string extra;
  if (hs >> extra) throw IoError("checkpoint: shape table longer than declared");
  for (auto& [name, shape] : table) {
    Tensor t(shape);
    is_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (static_cast<std::size_t>(is_.gcount()) != t.size() * sizeof(float)) {
      throw IoError("checkpoint: truncated data for " + block.module + "/" + name);
    }
    block.tensors.emplace_back(name, std::move(t));
  }
  return block;
}

CheckpointBlock CheckpointReader::expect(const std::string& kind, const std::string& module) {
  auto block = next();
  if (!block) throw IoError("checkpoint: missing block " + kind + "/" + module);
  if (block->kind != kind || block->module != module) {
    throw IoError("checkpoint: expected block " + kind + "/" + module + ", found " + block->kind + "/" +
                  block->module);
  }
  return std::move(*block);
}

void CheckpointReader::load_params(const std::string& module, const ParameterList& params) {
  CheckpointBlock block = expect("tensors", module);
  if (block.tensors.size() != params.size()) {
    throw IoError("checkpoint: " + module + " has " + std::to_string(block.tensors.size()) + " tensors, expected " +
                  std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = block.tensors[i];
    if (name != params[i].name || !t.same_shape(params[i].param->value)) {
      throw IoError("checkpoint: shape table mismatch in " + module + " at " + params[i].name + " (file has " + name +
                    ":" + shape_string(t.shape()) + ")");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = std::move(block.tensors[i].second);
}

}  // namespace strange::nn
