#include "sgfloc/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sgfloc/errors.hpp"
#include "sgfloc/image.hpp"

namespace sgfloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_numbers(std::initializer_list<double> v) {
  std::string out;
  for (double x : v) {
    if (!out.empty()) out += ' ';
    out += format_double(x);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  if (sep == ' ') {
    while (is >> cur) out.push_back(cur);
    return out;
  }
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_calibration(const Calibration& c) {
  const CameraModel& cam = c.camera;
  const VirtualCamera& vc = c.virtual_camera;
  std::ostringstream os;
  os << "f_m = " << format_double(cam.f_m) << '\n';
  os << "h_c = " << format_double(cam.h_c) << '\n';
  os << "alpha = " << format_double(cam.alpha) << '\n';
  os << "pixel_pitch = " << format_double(cam.pixel_pitch) << '\n';
  os << "principal_point = " << join_numbers({cam.principal_point.x(), cam.principal_point.y()}) << '\n';
  os << "image_size = " << cam.width << ' ' << cam.height << '\n';
  std::string k;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) {
      if (!k.empty()) k += ' ';
      k += format_double(vc.K(r, col));
    }
  }
  os << "K_v = " << k << '\n';
  os << "X_c = " << format_double(vc.X_c) << '\n';
  os << "Z_c = " << format_double(vc.Z_c) << '\n';
  os << "bev_size = " << vc.width << ' ' << vc.height << '\n';
  return os.str();
}

Calibration parse_calibration(const KeyValueFile& kv) {
  static const char* const kKeys[] = {"f_m", "h_c", "alpha", "pixel_pitch", "principal_point",
                                      "image_size", "K_v", "X_c", "Z_c", "bev_size"};
  for (const auto& [key, value] : kv.entries()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw InvalidInput("unknown calibration key '" + key + "'");
  }
  Calibration c;
  CameraModel& cam = c.camera;
  cam.f_m = kv.number("f_m");
  cam.h_c = kv.number("h_c");
  cam.alpha = kv.number("alpha");
  cam.pixel_pitch = kv.number("pixel_pitch");
  const auto pp = kv.numbers("principal_point", 2);
  cam.principal_point = {pp[0], pp[1]};
  const auto size = kv.numbers("image_size", 2);
  cam.width = static_cast<int>(size[0]);
  cam.height = static_cast<int>(size[1]);
  VirtualCamera& vc = c.virtual_camera;
  const auto k = kv.numbers("K_v", 9);
  for (int i = 0; i < 9; ++i) vc.K(i / 3, i % 3) = k[static_cast<std::size_t>(i)];
  vc.X_c = kv.number("X_c");
  vc.Z_c = kv.number("Z_c");
  const auto bev = kv.numbers("bev_size", 2);
  vc.width = static_cast<int>(bev[0]);
  vc.height = static_cast<int>(bev[1]);
  try {
    cam.validate();
    vc.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidInput(std::string("calibration: ") + e.what());
  }
  return c;
}

Calibration load_calibration(const fs::path& path) { return parse_calibration(KeyValueFile::load(path)); }

void write_odometry_csv(const fs::path& path, std::span<const Pose6> poses) {
  std::string out = "timestamp,x,y,z,roll,pitch,yaw\n";
  for (const Pose6& p : poses) {
    out += format_double(p.timestamp) + ',' + format_double(p.x) + ',' + format_double(p.y) + ',' +
           format_double(p.z) + ',' + format_double(p.roll) + ',' + format_double(p.pitch) + ',' +
           format_double(p.yaw) + '\n';
  }
  write_text(path, out);
}

std::vector<Pose6> read_odometry_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path.string());
  std::vector<Pose6> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("timestamp", 0) == 0) continue;
    const auto cols = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 7) throw InvalidInput(where + ": expected 7 columns");
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = parse_double(trim(cols[static_cast<std::size_t>(i)]), where);
    Pose6 p{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    if (!out.empty() && !(p.timestamp > out.back().timestamp)) {
      throw InvalidInput(where + ": timestamps must be strictly increasing");
    }
    out.push_back(p);
  }
  return out;
}

void write_tum(const fs::path& path, std::span<const Pose6> poses) {
  std::string out;
  for (const Pose6& p : poses) {
    const double cr = std::cos(p.roll / 2), sr = std::sin(p.roll / 2);
    const double cp = std::cos(p.pitch / 2), sp = std::sin(p.pitch / 2);
    const double cy = std::cos(p.yaw / 2), sy = std::sin(p.yaw / 2);
    const double qw = cr * cp * cy + sr * sp * sy;
    const double qx = sr * cp * cy - cr * sp * sy;
    const double qy = cr * sp * cy + sr * cp * sy;
    const double qz = cr * cp * sy - sr * sp * cy;
    out += join_numbers({p.timestamp, p.x, p.y, p.z, qx, qy, qz, qw}) + '\n';
  }
  write_text(path, out);
}

std::vector<Pose6> read_tum(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path.string());
  std::vector<Pose6> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, ' ');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 8) throw InvalidInput(where + ": expected 8 columns");
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = parse_double(cols[static_cast<std::size_t>(i)], where);
    const double qx = v[4], qy = v[5], qz = v[6], qw = v[7];
    Pose6 p;
    p.timestamp = v[0];
    p.x = v[1];
    p.y = v[2];
    p.z = v[3];
    p.roll = std::atan2(2 * (qw * qx + qy * qz), 1 - 2 * (qx * qx + qy * qy));
    p.pitch = std::asin(std::clamp(2 * (qw * qy - qz * qx), -1.0, 1.0));
    p.yaw = std::atan2(2 * (qw * qz + qx * qy), 1 - 2 * (qy * qy + qz * qz));
    out.push_back(p);
  }
  return out;
}

void write_annotations(const fs::path& path, const SequenceAnnotations& ann) {
  json markings = json::array();
  for (const MarkingAnnotation& m : ann.markings) {
    json visits = json::array();
    for (const MarkingVisit& v : m.visits) {
      visits.push_back({{"first_frame", v.first_frame},
                        {"last_frame", v.last_frame},
                        {"heading", v.heading},
                        {"detectable", v.detectable}});
    }
    markings.push_back({{"id", m.id},
                        {"name", m.name},
                        {"symmetric", m.symmetric},
                        {"centroid", {m.centroid.x(), m.centroid.y()}},
                        {"visits", visits}});
  }
  write_text(path, json{{"sequence", ann.sequence}, {"markings", markings}}.dump(1) + '\n');
}

SequenceAnnotations read_annotations(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path.string());
  SequenceAnnotations ann;
  try {
    const json doc = json::parse(f);
    ann.sequence = doc.value("sequence", "");
    for (const json& m : doc.at("markings")) {
      MarkingAnnotation a;
      a.id = m.at("id").get<int>();
      a.name = m.at("name").get<std::string>();
      a.symmetric = m.at("symmetric").get<bool>();
      a.centroid = {m.at("centroid").at(0).get<double>(), m.at("centroid").at(1).get<double>()};
      for (const json& v : m.at("visits")) {
        a.visits.push_back({v.at("first_frame").get<int>(), v.at("last_frame").get<int>(),
                            v.at("heading").get<double>(), v.at("detectable").get<bool>()});
      }
      ann.markings.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return ann;
}

std::string mask_filename(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", frame);
  return buf;
}

fs::path DatasetManifest::mask_path(int frame) const { return mask_dir / mask_filename(frame); }

DatasetManifest DatasetManifest::load(const fs::path& root) {
  if (!fs::is_directory(root)) throw InvalidInput("dataset directory not found: " + root.string());
  DatasetManifest m;
  m.root = root;
  m.calibration = root / "calib.txt";
  m.odometry = root / "odometry.csv";
  m.mask_dir = root / "masks";
  for (const fs::path& p : {m.calibration, m.odometry}) {
    if (!fs::is_regular_file(p)) throw InvalidInput("missing " + p.string());
  }
  if (!fs::is_directory(m.mask_dir)) throw InvalidInput("missing mask directory " + m.mask_dir.string());

  std::size_t rows = read_odometry_csv(m.odometry).size();
  std::size_t masks = 0;
  for (const auto& entry : fs::directory_iterator(m.mask_dir)) {
    if (entry.path().extension() == ".png") ++masks;
  }
  if (masks == 0) throw InvalidInput("mask directory is empty: " + m.mask_dir.string());
  if (rows != masks) {
    throw InvalidInput("odometry has " + std::to_string(rows) + " rows but " + std::to_string(masks) +
                       " masks were found");
  }
  m.frame_count = static_cast<int>(rows);
  for (int i = 0; i < m.frame_count; ++i) {
    if (!fs::is_regular_file(m.mask_path(i))) throw InvalidInput("missing mask " + m.mask_path(i).string());
  }
  if (fs::is_regular_file(root / "groundtruth.tum")) m.groundtruth = root / "groundtruth.tum";
  if (fs::is_regular_file(root / "annotations.json")) m.annotations = root / "annotations.json";
  return m;
}

void write_dataset(const fs::path& root, const Scenario& s, std::span<const Pose6> odometry,
                   const SequenceAnnotations& ann) {
  std::error_code ec;
  fs::create_directories(root / "masks", ec);
  if (ec) throw IoError("cannot create " + (root / "masks").string() + ": " + ec.message());

  write_text(root / "calib.txt", format_calibration({s.camera, s.virtual_camera}));
  write_odometry_csv(root / "odometry.csv", odometry);
  write_tum(root / "groundtruth.tum", s.trajectory);
  write_annotations(root / "annotations.json", ann);

  // Frames are independent; render them on a small worker pool.
  const int n = s.frame_count();
  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  std::vector<std::string> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int f = static_cast<int>(w); f < n; f += static_cast<int>(workers)) {
          write_png(root / "masks" / mask_filename(f), render_mask(s, f));
        }
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const std::string& e : errors) {
    if (!e.empty()) throw IoError(e);
  }
}

}  // namespace sgfloc
