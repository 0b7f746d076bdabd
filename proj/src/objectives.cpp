#include "lang2face/objectives.hpp"

#include <cstdio>
#include <sstream>

namespace lang2face {

std::string LossReport::csv_row() const {
  std::ostringstream os;
  os << step;
  char buf[40];
  for (double v : values()) {
    std::snprintf(buf, sizeof(buf), ",%.12g", v);
    os << buf;
  }
  return os.str();
}

std::string LossReport::csv_header() {
  std::string s;
  for (const auto& c : column_names()) {
    if (!s.empty()) s += ",";
    s += c;
  }
  return s;
}

LossReport LossReport::from_csv_row(const std::string& row) {
  std::vector<double> vals;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  if (vals.size() != column_names().size())
    throw ShapeMismatch("LossReport row has wrong column count");
  LossReport r;
  size_t i = 0;
  r.step = int64_t(vals[i++]);
  r.l_lvm = vals[i++];
  r.l_fv[0] = vals[i++];
  r.l_fv[1] = vals[i++];
  r.l_ev[0] = vals[i++];
  r.l_ev[1] = vals[i++];
  r.l_syn = vals[i++];
  for (int k = 0; k < 3; ++k) r.l_adv[k] = vals[i++];
  for (int k = 0; k < 3; ++k) r.l_id[k] = vals[i++];
  for (int k = 0; k < 3; ++k) r.l_recon[k] = vals[i++];
  r.l_ca_kl = vals[i++];
  r.l_d_total = vals[i++];
  r.l_g_total = vals[i++];
  r.total = vals[i++];
  return r;
}

}  // namespace lang2face
