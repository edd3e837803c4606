#include <pybind11/pybind11.h>
PYBIND11_MODULE(_thermospec, m) { m.doc() = "thermospec"; }
