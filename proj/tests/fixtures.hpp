#pragma once

#include "ulca/csv_io.hpp"
#include "ulca/dataset.hpp"

namespace fixture {

inline const ulca::Dataset& wine_raw() {
  static const ulca::Dataset data = ulca::csv::read_dataset(ULCA_DATA_DIR "/wine.csv", "label");
  return data;
}

/// Wine with every attribute z-scored, as the walkthrough uses it.
inline const ulca::Dataset& wine() {
  static const ulca::Dataset data = ulca::standardize(wine_raw());
  return data;
}

}  // namespace fixture
