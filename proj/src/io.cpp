#include "vsf/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vsf::io {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_header(std::ostream& os, const char* kind,
                  const std::string& config_echo) {
  os << "# vsf-" << kind << " v1\n";
  os << "# tool_version " << kToolVersion << "\n";
  os << "# config " << config_echo << "\n";
}

void check_header(std::istream& is, const char* kind, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line.rfind(std::string("# vsf-") + kind, 0) != 0)
    throw DataError(path + ": not a vsf-" + kind + " file");
  // skip remaining header comments
  while (is.peek() == '#') std::getline(is, line);
}

void emit(std::ostream& os, const Mat3& m) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) os << format_g17(m(i, j)) << ' ';
}

Mat3 read_mat3(std::istringstream& is, const std::string& what) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!(is >> m(i, j))) throw DataError("truncated " + what);
  return m;
}

}  // namespace

void save_dataset(const std::vector<synthgen::LabeledPair>& pairs,
                  const std::string& config_echo, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_header(os, "dataset", config_echo);
  for (const auto& p : pairs) {
    emit(os, p.gt_pose.r);
    for (int i = 0; i < 3; ++i) os << format_g17(p.gt_pose.t(i)) << ' ';
    emit(os, p.gt_essential.e);
    os << p.correspondences.count();
    for (int i = 0; i < p.correspondences.count(); ++i) {
      const auto& c = p.correspondences.items[i];
      os << ' ' << format_g17(c.x) << ' ' << format_g17(c.y) << ' '
         << format_g17(c.xp) << ' ' << format_g17(c.yp) << ' '
         << int(p.correspondences.labels.empty() ? 0
                                                 : p.correspondences.labels[i]);
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<synthgen::LabeledPair> load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  check_header(is, "dataset", path);
  std::vector<synthgen::LabeledPair> pairs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    synthgen::LabeledPair p;
    p.gt_pose.r = read_mat3(ls, "rotation");
    for (int i = 0; i < 3; ++i)
      if (!(ls >> p.gt_pose.t(i))) throw DataError("truncated translation");
    p.gt_essential.e = read_mat3(ls, "essential matrix");
    int n;
    if (!(ls >> n) || n < 0) throw DataError("bad correspondence count");
    for (int i = 0; i < n; ++i) {
      Correspondence c;
      int label;
      if (!(ls >> c.x >> c.y >> c.xp >> c.yp >> label))
        throw DataError("truncated correspondence " + std::to_string(i) +
                        " in pair " + std::to_string(pairs.size()));
      p.correspondences.items.push_back(c);
      p.correspondences.labels.push_back(static_cast<uint8_t>(label != 0));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_predictions(const std::vector<Prediction>& preds,
                      const std::string& config_echo, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_header(os, "predictions", config_echo);
  for (const auto& p : preds) {
    if (!p.ok) {
      os << "failed " << (p.failure_reason.empty() ? "unknown" : p.failure_reason)
         << '\n';
      continue;
    }
    os << "ok " << p.probs.size();
    for (int64_t i = 0; i < p.probs.size(); ++i)
      os << ' ' << format_g17(p.probs(i));
    for (int idx : p.final_indices) os << ' ' << idx;
    os << ' ';
    emit(os, p.essential.e);
    os << p.verified_flags.size();
    for (uint8_t f : p.verified_flags) os << ' ' << int(f);
    os << ' ';
    emit(os, p.pose.r);
    for (int i = 0; i < 3; ++i) os << format_g17(p.pose.t(i)) << ' ';
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  check_header(is, "predictions", path);
  std::vector<Prediction> preds;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Prediction p;
    std::string status;
    ls >> status;
    if (status == "failed") {
      p.ok = false;
      std::getline(ls, p.failure_reason);
      preds.push_back(std::move(p));
      continue;
    }
    if (status != "ok") throw DataError("bad prediction status: " + status);
    int nf;
    if (!(ls >> nf) || nf < 0) throw DataError("bad candidate count");
    p.probs.resize(nf);
    for (int i = 0; i < nf; ++i)
      if (!(ls >> p.probs(i))) throw DataError("truncated probabilities");
    p.final_indices.resize(nf);
    for (int i = 0; i < nf; ++i)
      if (!(ls >> p.final_indices[i])) throw DataError("truncated indices");
    p.essential.e = read_mat3(ls, "essential matrix");
    int n;
    if (!(ls >> n) || n < 0) throw DataError("bad flag count");
    p.verified_flags.resize(n);
    for (int i = 0; i < n; ++i) {
      int f;
      if (!(ls >> f)) throw DataError("truncated flags");
      p.verified_flags[i] = static_cast<uint8_t>(f != 0);
    }
    p.pose.r = read_mat3(ls, "pose rotation");
    for (int i = 0; i < 3; ++i)
      if (!(ls >> p.pose.t(i))) throw DataError("truncated pose translation");
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace vsf::io
