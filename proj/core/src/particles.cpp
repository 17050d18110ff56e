#include "sa/particles.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace sa {

namespace {
constexpr char kMagic[8] = {'S', 'A', 'P', 'S', 'M', '0', '0', '1'};
}

void save_model(const ShapeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  out.write(kMagic, 8);
  uint64_t n = model.shape_matrix.rows();
  uint64_t m = model.num_particles;
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&m), 8);
  for (const auto& id : model.sample_ids) {
    uint32_t len = static_cast<uint32_t>(id.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(id.data(), len);
  }
  out.write(reinterpret_cast<const char*>(model.shape_matrix.data()),
            static_cast<std::streamsize>(sizeof(double) * n * 3 * m));
  if (!out) throw std::runtime_error("model write failure: " + path);
}

ShapeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a shape model file: " + path);
  uint64_t n = 0, m = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&m), 8);
  if (!in || n == 0 || m == 0 || n > (1u << 24) || m > (1u << 24))
    throw std::runtime_error("corrupt model header: " + path);
  ShapeModel model;
  model.num_particles = static_cast<int>(m);
  model.sample_ids.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || len > (1u << 16)) throw std::runtime_error("corrupt sample id: " + path);
    model.sample_ids[i].resize(len);
    in.read(model.sample_ids[i].data(), len);
  }
  model.shape_matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(3 * m));
  in.read(reinterpret_cast<char*>(model.shape_matrix.data()),
          static_cast<std::streamsize>(sizeof(double) * n * 3 * m));
  if (!in) throw std::runtime_error("truncated model file: " + path);
  return model;
}

}  // namespace sa
