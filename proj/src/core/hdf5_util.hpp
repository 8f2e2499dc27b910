#pragma once

#include <hdf5.h>

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace celnet::h5 {

struct Handle {
  hid_t id = H5I_INVALID_HID;
  herr_t (*closer)(hid_t) = nullptr;
  Handle() = default;
  Handle(hid_t i, herr_t (*c)(hid_t)) : id(i), closer(c) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : id(o.id), closer(o.closer) { o.id = H5I_INVALID_HID; }
  ~Handle() {
    if (id >= 0 && closer) closer(id);
  }
  operator hid_t() const { return id; }
  bool ok() const { return id >= 0; }
};

inline Handle create_file(const std::string& path) {
  H5E_auto2_t func;
  void* cdata;
  H5Eget_auto2(H5E_DEFAULT, &func, &cdata);
  H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  Handle f(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
  H5Eset_auto2(H5E_DEFAULT, func, cdata);
  CELNET_CHECK_IO(f.ok(), "cannot create file: %s", path.c_str());
  return f;
}

inline Handle open_file(const std::string& path) {
  H5E_auto2_t func;
  void* cdata;
  H5Eget_auto2(H5E_DEFAULT, &func, &cdata);
  H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  Handle f(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  H5Eset_auto2(H5E_DEFAULT, func, cdata);
  CELNET_CHECK_IO(f.ok(), "cannot open file: %s", path.c_str());
  return f;
}

inline bool dataset_exists(hid_t file, const std::string& name) {
  return H5Lexists(file, name.c_str(), H5P_DEFAULT) > 0;
}

// Creation property list with object timestamps off, so identical content
// yields identical bytes.
inline Handle quiet_dcpl() {
  Handle p(H5Pcreate(H5P_DATASET_CREATE), H5Pclose);
  H5Pset_obj_track_times(p, false);
  return p;
}

template <typename T>
hid_t native_type();
template <>
inline hid_t native_type<float>() { return H5T_NATIVE_FLOAT; }
template <>
inline hid_t native_type<double>() { return H5T_NATIVE_DOUBLE; }
template <>
inline hid_t native_type<uint8_t>() { return H5T_NATIVE_UINT8; }
template <>
inline hid_t native_type<int64_t>() { return H5T_NATIVE_INT64; }

template <typename T>
void write_array(hid_t file, const std::string& name, const std::vector<hsize_t>& dims,
                 const T* data) {
  Handle space(H5Screate_simple(int(dims.size()), dims.data(), nullptr), H5Sclose);
  CELNET_CHECK_IO(space.ok(), "h5: cannot create dataspace for %s", name.c_str());
  Handle dcpl = quiet_dcpl();
  Handle ds(H5Dcreate2(file, name.c_str(), native_type<T>(), space, H5P_DEFAULT, dcpl, H5P_DEFAULT),
            H5Dclose);
  CELNET_CHECK_IO(ds.ok(), "h5: cannot create dataset %s", name.c_str());
  herr_t st = H5Dwrite(ds, native_type<T>(), H5S_ALL, H5S_ALL, H5P_DEFAULT, data);
  CELNET_CHECK_IO(st >= 0, "h5: write failed for %s", name.c_str());
}

inline std::vector<hsize_t> dataset_dims(hid_t file, const std::string& name) {
  CELNET_CHECK_IO(dataset_exists(file, name), "h5: missing dataset '%s'", name.c_str());
  Handle ds(H5Dopen2(file, name.c_str(), H5P_DEFAULT), H5Dclose);
  CELNET_CHECK_IO(ds.ok(), "h5: cannot open dataset %s", name.c_str());
  Handle space(H5Dget_space(ds), H5Sclose);
  int rank = H5Sget_simple_extent_ndims(space);
  std::vector<hsize_t> dims(size_t(rank > 0 ? rank : 0));
  if (rank > 0) H5Sget_simple_extent_dims(space, dims.data(), nullptr);
  return dims;
}

template <typename T>
void read_array(hid_t file, const std::string& name, std::vector<T>& out) {
  auto dims = dataset_dims(file, name);
  hsize_t total = 1;
  for (auto d : dims) total *= d;
  out.resize(size_t(total));
  Handle ds(H5Dopen2(file, name.c_str(), H5P_DEFAULT), H5Dclose);
  herr_t st = H5Dread(ds, native_type<T>(), H5S_ALL, H5S_ALL, H5P_DEFAULT, out.data());
  CELNET_CHECK_IO(st >= 0, "h5: read failed for %s", name.c_str());
}

inline void write_string(hid_t file, const std::string& name, const std::string& value) {
  Handle type(H5Tcopy(H5T_C_S1), H5Tclose);
  H5Tset_size(type, value.size() + 1);
  Handle space(H5Screate(H5S_SCALAR), H5Sclose);
  Handle dcpl = quiet_dcpl();
  Handle ds(H5Dcreate2(file, name.c_str(), type, space, H5P_DEFAULT, dcpl, H5P_DEFAULT), H5Dclose);
  CELNET_CHECK_IO(ds.ok(), "h5: cannot create dataset %s", name.c_str());
  herr_t st = H5Dwrite(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, value.c_str());
  CELNET_CHECK_IO(st >= 0, "h5: write failed for %s", name.c_str());
}

inline std::string read_string(hid_t file, const std::string& name) {
  CELNET_CHECK_IO(dataset_exists(file, name), "h5: missing dataset '%s'", name.c_str());
  Handle ds(H5Dopen2(file, name.c_str(), H5P_DEFAULT), H5Dclose);
  Handle type(H5Dget_type(ds), H5Tclose);
  size_t sz = H5Tget_size(type);
  std::vector<char> buf(sz + 1, '\0');
  Handle mtype(H5Tcopy(H5T_C_S1), H5Tclose);
  H5Tset_size(mtype, sz);
  herr_t st = H5Dread(ds, mtype, H5S_ALL, H5S_ALL, H5P_DEFAULT, buf.data());
  CELNET_CHECK_IO(st >= 0, "h5: read failed for %s", name.c_str());
  return std::string(buf.data());
}

inline void make_group(hid_t file, const std::string& name) {
  Handle g(H5Gcreate2(file, name.c_str(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Gclose);
  CELNET_CHECK_IO(g.ok(), "h5: cannot create group %s", name.c_str());
}

inline std::vector<std::string> list_group(hid_t file, const std::string& name) {
  std::vector<std::string> names;
  if (H5Lexists(file, name.c_str(), H5P_DEFAULT) <= 0) return names;
  Handle g(H5Gopen2(file, name.c_str(), H5P_DEFAULT), H5Gclose);
  H5G_info_t info;
  H5Gget_info(g, &info);
  for (hsize_t i = 0; i < info.nlinks; ++i) {
    ssize_t len = H5Lget_name_by_idx(g, ".", H5_INDEX_NAME, H5_ITER_INC, i, nullptr, 0, H5P_DEFAULT);
    std::vector<char> buf(size_t(len) + 1, '\0');
    H5Lget_name_by_idx(g, ".", H5_INDEX_NAME, H5_ITER_INC, i, buf.data(), size_t(len) + 1, H5P_DEFAULT);
    names.emplace_back(buf.data());
  }
  return names;
}

}  // namespace celnet::h5
