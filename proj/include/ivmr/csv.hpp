#pragma once

#include <istream>
#include <string>
#include <vector>

#include "ivmr/data.hpp"

namespace ivmr {

/// Header names for each role. An empty x list takes every unmapped column in file order.
struct ColumnMapping {
  std::string y = "y";
  std::string a = "a";
  std::string z = "z";
  std::vector<std::string> x;
};

/// Reads a header row and numeric data rows. A and Z must be 0/1.
/// Errors: MissingColumn, ParseError (with the data row), then dataset validation.
Dataset read_csv(std::istream& in, const ColumnMapping& mapping);
Dataset load_csv(const std::string& path, const ColumnMapping& mapping = {});

/// Header y,a,z,x1..xp; values at full double precision.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace ivmr
