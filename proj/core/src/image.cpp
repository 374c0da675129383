#include "gav/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gav/binio.hpp"

namespace gav {
namespace img {

void validate_image(const Tensor& image, const char* what) {
  if (image.rank() != 3 || (image.extent(2) != 1 && image.extent(2) != 3))
    throw Error(std::string(what) + ": expected HxWx1 or HxWx3 image, got " +
                shape_str(image.shape()));
  image.check_finite(what);
}

void write_ppm(const Tensor& image, const std::string& path) {
  validate_image(image, "write_ppm");
  int64_t h = image.extent(0), w = image.extent(1), c = image.extent(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path);
  f << (c == 3 ? "P6\n" : "P5\n") << w << " " << h << "\n255\n";
  for (int64_t i = 0; i < image.size(); ++i) {
    double v = std::clamp(image[i], 0.0, 1.0);
    f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!f) throw Error("write failed: " + path);
}

void write_raw(const Tensor& image, const std::string& path) {
  validate_image(image, "write_raw");
  BinWriter w;
  w.tag("LIMG");
  w.u32(1);
  w.u32(static_cast<uint32_t>(image.extent(0)));
  w.u32(static_cast<uint32_t>(image.extent(1)));
  w.u32(static_cast<uint32_t>(image.extent(2)));
  w.f32_array(image);
  w.save(path);
}

Tensor read_raw(const std::string& path) {
  BinReader r = BinReader::from_file(path);
  r.set_context("image header");
  if (r.tag() != "LIMG") throw Error(path + ": bad magic, not a raw image");
  uint32_t ver = r.u32();
  if (ver != 1) throw Error(path + ": unsupported version " + std::to_string(ver));
  int64_t h = r.u32(), w = r.u32(), c = r.u32();
  if (c != 1 && c != 3) throw Error(path + ": invalid channel count");
  r.set_context("image pixels");
  Tensor t = r.f32_tensor({h, w, c});
  if (!r.eof()) throw Error(path + ": trailing bytes after pixels");
  return t;
}

}  // namespace img
}  // namespace gav
