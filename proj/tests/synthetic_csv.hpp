#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>

// Self-contained CSV generator for tests that only see the C API or the CLI.
// Columns: id,east,north,mmi,x1,x2,x3,eco. mmi = 3 log(x1) + x2 + a smooth
// surface + noise; x3 is zero-inflated noise and eco a three-level factor.
inline std::string synthetic_csv(int n, unsigned seed, bool with_response = true) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::ostringstream os;
  os.precision(17);
  os << "id,east,north" << (with_response ? ",mmi" : "") << ",x1,x2,x3,eco\n";
  for (int i = 0; i < n; ++i) {
    const double e = 10.0 * u(gen), no = 10.0 * u(gen);
    const double x1 = 0.1 + 99.9 * u(gen), x2 = u(gen);
    const double x3 = u(gen) < 0.4 ? 0.0 : u(gen);
    const int eco = static_cast<int>(3 * u(gen)) + 1;
    const double y = 3.0 * std::log(x1) + x2 + std::sin(e / 2.0) + std::cos(no / 3.0) + 0.3 * z(gen);
    os << i + 1 << ',' << e << ',' << no;
    if (with_response) os << ',' << y;
    os << ',' << x1 << ',' << x2 << ',' << x3 << ',' << eco << '\n';
  }
  return os.str();
}

inline const char* synthetic_schema() {
  return "easting:east,northing:north,response:mmi,categorical:eco,ignore:id";
}
inline const char* synthetic_site_schema() { return "easting:east,northing:north,categorical:eco,ignore:id"; }
