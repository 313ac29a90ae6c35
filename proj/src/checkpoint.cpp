#include "sanmt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sanmt/errors.hpp"

namespace sanmt {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'S', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint8_t read_u8(std::istream& in) {
  int c = in.get();
  if (c == EOF) throw DataError("truncated checkpoint");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t read_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw DataError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw DataError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u8(out, 0);  // dtype tag: f64
  write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int dim : t.shape) write_u32(out, static_cast<std::uint32_t>(dim));
  for (double v : t.data) write_f64(out, v);
}

}  // namespace

void save_checkpoint(const Model& model, const AdamState* opt, long step,
                     double best_valid_ppl, const std::string& path) {
  std::map<std::string, const Tensor*> tensors;
  for (const auto& [name, t] : model.params) tensors.emplace(name, &t);
  if (opt) {
    for (const auto& [name, t] : opt->m) tensors.emplace("adam.m/" + name, &t);
    for (const auto& [name, t] : opt->v) tensors.emplace("adam.v/" + name, &t);
  }

  json cfg;
  cfg["model"] = json::parse(model.cfg.to_json());
  cfg["training"]["step"] = step;
  cfg["training"]["best_valid_ppl"] = best_valid_ppl;
  std::string cfg_text = cfg.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint to " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) write_tensor(out, name, *t);
  if (!out) throw DataError("failed writing checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw DataError("truncated checkpoint " + path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path + ": not a checkpoint (bad magic)");
  std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));

  std::uint32_t cfg_len = read_u32(in);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw DataError("truncated checkpoint " + path);

  Checkpoint ckpt;
  json cfg = json::parse(cfg_text);
  ckpt.model.cfg = ModelConfig::from_json(cfg.at("model").dump());
  ckpt.step = cfg.at("training").at("step").get<long>();
  ckpt.best_valid_ppl = cfg.at("training").at("best_valid_ppl").get<double>();

  std::map<std::string, Tensor> tensors;
  std::uint32_t count = read_u32(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint " + path);
    std::uint8_t dtype = read_u8(in);
    if (dtype != 0) throw DataError(path + ": unknown dtype tag for tensor " + name);
    std::uint32_t rank = read_u32(in);
    std::vector<int> shape;
    std::int64_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<int>(read_u32(in)));
      total *= shape.back();
    }
    std::vector<double> data(static_cast<std::size_t>(total));
    for (double& v : data) v = read_f64(in);
    if (tensors.count(name)) throw DataError(path + ": duplicate tensor " + name);
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }

  // bind tensors against the parameter spec; anything left over must be
  // an optimizer moment of a known parameter
  for (const auto& [name, shape] : Model::param_spec(ckpt.model.cfg)) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError(path + ": checkpoint missing parameter " + name);
    if (it->second.shape != shape)
      throw DataError(path + ": parameter " + name + " has shape " +
                      it->second.shape_str());
    it->second.requires_grad = true;
    ckpt.model.params.emplace(name, std::move(it->second));
    tensors.erase(it);
  }
  for (auto& [name, t] : tensors) {
    bool is_m = name.rfind("adam.m/", 0) == 0;
    bool is_v = name.rfind("adam.v/", 0) == 0;
    if (!is_m && !is_v) throw DataError(path + ": unknown tensor name " + name);
    std::string pname = name.substr(7);
    if (!ckpt.model.params.count(pname))
      throw DataError(path + ": optimizer moment for unknown parameter " + pname);
    (is_m ? ckpt.opt.m : ckpt.opt.v).emplace(pname, std::move(t));
  }
  ckpt.opt.step = ckpt.step;
  return ckpt;
}

}  // namespace sanmt
