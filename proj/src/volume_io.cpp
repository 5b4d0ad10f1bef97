#include "voxuad/volume_io.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxuad {

namespace {

// The subset of the 348-byte NIfTI-1 header this project reads and writes.
#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtInt32 = 8;
constexpr int16_t kDtFloat32 = 16;
constexpr int16_t kDtFloat64 = 64;
constexpr int16_t kDtUint16 = 512;

template <typename T>
void byteswap(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  byteswap(h.sizeof_hdr);
  for (auto& d : h.dim) byteswap(d);
  byteswap(h.datatype);
  byteswap(h.bitpix);
  for (auto& p : h.pixdim) byteswap(p);
  byteswap(h.vox_offset);
  byteswap(h.scl_slope);
  byteswap(h.scl_inter);
  byteswap(h.qform_code);
  byteswap(h.sform_code);
  for (auto& v : h.srow_x) byteswap(v);
  for (auto& v : h.srow_y) byteswap(v);
  for (auto& v : h.srow_z) byteswap(v);
}

struct GzFile {
  gzFile f = nullptr;
  explicit GzFile(const std::filesystem::path& path, const char* mode) {
    f = gzopen(path.string().c_str(), mode);
    if (!f) throw std::runtime_error("cannot open " + path.string());
  }
  ~GzFile() {
    if (f) gzclose(f);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* dst, size_t n) {
    if (gzread(f, dst, (unsigned)n) != (int)n) throw std::runtime_error("short NIfTI read");
  }
  void write(const void* src, size_t n) {
    if (gzwrite(f, src, (unsigned)n) != (int)n) throw std::runtime_error("short NIfTI write");
  }
};

bool ends_with_gz(const std::filesystem::path& p) {
  auto s = p.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

template <typename T>
void convert_voxels(const std::vector<char>& bytes, size_t n, bool swapped,
                    std::vector<float>& out, float slope, float inter) {
  const T* src = reinterpret_cast<const T*>(bytes.data());
  out.resize(n);
  for (size_t i = 0; i < n; ++i) {
    T v = src[i];
    if (swapped) byteswap(v);
    out[i] = (float)(double(v) * slope + inter);
  }
}

Volume read_nifti_impl(const std::filesystem::path& path) {
  GzFile file(path, "rb");
  Nifti1Header h{};
  file.read(&h, sizeof(h));
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348) throw std::runtime_error("not a NIfTI-1 file: " + path.string());
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
    throw std::runtime_error("unsupported NIfTI magic in " + path.string());
  if (h.dim[0] < 1 || h.dim[0] > 7) throw std::runtime_error("bad NIfTI dim[0]");
  for (int d = 4; d <= h.dim[0]; ++d)
    if (h.dim[d] > 1) throw std::runtime_error("only scalar 3D NIfTI volumes are supported");

  Volume v;
  v.shape = {std::max<int>(1, h.dim[1]), std::max<int>(1, h.dim[2]), std::max<int>(1, h.dim[3])};
  if (h.sform_code > 0) {
    auto norm3 = [](const float* r) {
      return std::sqrt(double(r[0]) * r[0] + double(r[1]) * r[1] + double(r[2]) * r[2]);
    };
    // column norms of the sform rotation part give the voxel spacing
    double cx = std::sqrt(double(h.srow_x[0]) * h.srow_x[0] + double(h.srow_y[0]) * h.srow_y[0] +
                          double(h.srow_z[0]) * h.srow_z[0]);
    double cy = std::sqrt(double(h.srow_x[1]) * h.srow_x[1] + double(h.srow_y[1]) * h.srow_y[1] +
                          double(h.srow_z[1]) * h.srow_z[1]);
    double cz = std::sqrt(double(h.srow_x[2]) * h.srow_x[2] + double(h.srow_y[2]) * h.srow_y[2] +
                          double(h.srow_z[2]) * h.srow_z[2]);
    (void)norm3;
    v.spacing = {cx > 0 ? cx : 1.0, cy > 0 ? cy : 1.0, cz > 0 ? cz : 1.0};
  } else {
    v.spacing = {h.pixdim[1] > 0 ? h.pixdim[1] : 1.0, h.pixdim[2] > 0 ? h.pixdim[2] : 1.0,
                 h.pixdim[3] > 0 ? h.pixdim[3] : 1.0};
  }

  size_t n = v.shape.total();
  size_t voxel_bytes = size_t(h.bitpix) / 8;
  long offset = (long)h.vox_offset;
  if (offset < (long)sizeof(h)) offset = (long)sizeof(h);
  std::vector<char> skip(offset - sizeof(h));
  if (!skip.empty()) file.read(skip.data(), skip.size());

  std::vector<char> bytes(n * voxel_bytes);
  file.read(bytes.data(), bytes.size());

  float slope = (h.scl_slope == 0.0f || !std::isfinite(h.scl_slope)) ? 1.0f : h.scl_slope;
  float inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0f;

  std::vector<float> raw;
  switch (h.datatype) {
    case kDtUint8: convert_voxels<uint8_t>(bytes, n, false, raw, slope, inter); break;
    case kDtInt16: convert_voxels<int16_t>(bytes, n, swapped, raw, slope, inter); break;
    case kDtUint16: convert_voxels<uint16_t>(bytes, n, swapped, raw, slope, inter); break;
    case kDtInt32: convert_voxels<int32_t>(bytes, n, swapped, raw, slope, inter); break;
    case kDtFloat32: convert_voxels<float>(bytes, n, swapped, raw, slope, inter); break;
    case kDtFloat64: convert_voxels<double>(bytes, n, swapped, raw, slope, inter); break;
    default: throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(h.datatype));
  }

  // NIfTI stores x fastest; internal layout has z fastest.
  v.data.resize(n);
  const int nx = v.shape.nx, ny = v.shape.ny, nz = v.shape.nz;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        v.data[voxel_index(v.shape, x, y, z)] = raw[size_t(z) * ny * nx + size_t(y) * nx + x];
  return v;
}

void write_nifti_impl(const std::filesystem::path& path, const Volume& v) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = (int16_t)v.shape.nx;
  h.dim[2] = (int16_t)v.shape.ny;
  h.dim[3] = (int16_t)v.shape.nz;
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = kDtFloat32;
  h.bitpix = 32;
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = (float)v.spacing.sx;
  h.pixdim[2] = (float)v.spacing.sy;
  h.pixdim[3] = (float)v.spacing.sz;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.xyzt_units = 2;  // millimetres
  h.sform_code = 1;
  h.srow_x[0] = (float)v.spacing.sx;
  h.srow_y[1] = (float)v.spacing.sy;
  h.srow_z[2] = (float)v.spacing.sz;
  std::memcpy(h.magic, "n+1", 4);

  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  GzFile file(path, ends_with_gz(path) ? "wb" : "wbT");
  file.write(&h, sizeof(h));
  const char extender[4] = {0, 0, 0, 0};
  file.write(extender, 4);

  // permute to x-fastest order
  const int nx = v.shape.nx, ny = v.shape.ny, nz = v.shape.nz;
  std::vector<float> raw(v.data.size());
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        raw[size_t(z) * ny * nx + size_t(y) * nx + x] = v.data[voxel_index(v.shape, x, y, z)];
  file.write(raw.data(), raw.size() * sizeof(float));
}

BrainMask to_mask(const Volume& v) {
  BrainMask m;
  m.shape = v.shape;
  m.data.resize(v.data.size());
  for (size_t i = 0; i < v.data.size(); ++i) m.data[i] = v.data[i] > 0.5f ? 1 : 0;
  return m;
}

Volume from_binary(const Shape3& shape, const std::vector<uint8_t>& data, Spacing3 spacing) {
  Volume v;
  v.shape = shape;
  v.spacing = spacing;
  v.data.resize(data.size());
  for (size_t i = 0; i < data.size(); ++i) v.data[i] = data[i] ? 1.0f : 0.0f;
  return v;
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path) { return read_nifti_impl(path); }

void write_nifti(const std::filesystem::path& path, const Volume& v) { write_nifti_impl(path, v); }

BrainMask read_nifti_mask(const std::filesystem::path& path) {
  return to_mask(read_nifti_impl(path));
}

void write_nifti(const std::filesystem::path& path, const BrainMask& m, Spacing3 spacing) {
  write_nifti_impl(path, from_binary(m.shape, m.data, spacing));
}

LabelMap read_nifti_labels(const std::filesystem::path& path) {
  BrainMask m = to_mask(read_nifti_impl(path));
  return LabelMap{m.shape, std::move(m.data)};
}

void write_nifti(const std::filesystem::path& path, const LabelMap& l, Spacing3 spacing) {
  write_nifti_impl(path, from_binary(l.shape, l.data, spacing));
}

Volume read_raw(const std::filesystem::path& path) {
  std::filesystem::path meta_path = path;
  meta_path += ".meta";
  std::ifstream meta(meta_path);
  if (!meta) throw std::runtime_error("missing sidecar " + meta_path.string());
  Volume v;
  std::string dtype;
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "shape:") {
      ss >> v.shape.nx >> v.shape.ny >> v.shape.nz;
    } else if (key == "spacing:") {
      ss >> v.spacing.sx >> v.spacing.sy >> v.spacing.sz;
    } else if (key == "dtype:") {
      ss >> dtype;
    } else {
      throw std::runtime_error("unknown sidecar key '" + key + "' in " + meta_path.string());
    }
  }
  if (dtype != "float32") throw std::runtime_error("unsupported raw dtype: " + dtype);
  if (v.shape.total() == 0) throw std::runtime_error("sidecar missing shape");

  std::ifstream raw(path, std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + path.string());
  v.data.resize(v.shape.total());
  raw.read(reinterpret_cast<char*>(v.data.data()), v.data.size() * sizeof(float));
  if (!raw) throw std::runtime_error("short raw read from " + path.string());
  return v;
}

void write_raw(const std::filesystem::path& path, const Volume& v) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    raw.write(reinterpret_cast<const char*>(v.data.data()), v.data.size() * sizeof(float));
    if (!raw) throw std::runtime_error("raw write failed: " + path.string());
  }
  std::ostringstream meta;
  meta << "shape: " << v.shape.nx << " " << v.shape.ny << " " << v.shape.nz << "\n";
  meta << "spacing: " << v.spacing.sx << " " << v.spacing.sy << " " << v.spacing.sz << "\n";
  meta << "dtype: float32\n";
  std::filesystem::path meta_path = path;
  meta_path += ".meta";
  atomic_write_file(meta_path, meta.str());
}

Volume read_volume(const std::filesystem::path& path) {
  auto s = path.string();
  if (s.ends_with(".raw")) return read_raw(path);
  return read_nifti(path);
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
  auto s = path.string();
  if (s.ends_with(".raw")) {
    write_raw(path, v);
  } else {
    write_nifti(path, v);
  }
}

void atomic_write_file(const std::filesystem::path& path, const std::string& contents) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), (std::streamsize)contents.size());
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace voxuad
