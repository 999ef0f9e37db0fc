#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "qsflow/generators.hpp"
#include "qsflow/ito_algebra.hpp"
#include "qsflow/matrix_core.hpp"
#include "qsflow/trajectories.hpp"
#include "qsflow/weyl_fock.hpp"

namespace qsf::json_io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Throws ErrorCode::kConfig naming `where` if `obj` has keys outside
/// `allowed` or is not an object.
void check_keys(const Json& obj, std::initializer_list<const char*> allowed,
                const std::string& where);

Complex complex_from(const Json& j, const std::string& where);
ComplexMatrix matrix_from(const Json& j, const std::string& where);
ComplexVector vector_from(const Json& j, const std::string& where);
double real_from(const Json& j, const std::string& where);
std::size_t count_from(const Json& j, const std::string& where);
std::vector<double> reals_from(const Json& j, const std::string& where);

ItoQuadruple quadruple_from(const Json& j, const std::string& where);
StepFunction step_from(const Json& j, const std::string& where);
PiecewiseCoherent coherent_from(const Json& j, const std::string& where);
GermModel model_from(const Json& j, const std::string& where);

OrderedJson to_json(Complex z);
OrderedJson to_json(const ComplexMatrix& a);
OrderedJson vector_to_json(const ComplexVector& v);
OrderedJson to_json(const ItoQuadruple& a);
OrderedJson to_json(const StepFunction& g);
OrderedJson to_json(const PiecewiseCoherent& f);
OrderedJson to_json(const GermModel& model);

/// Locale-independent shortest round-trip rendering of a double.
std::string format_double(double x);

}  // namespace qsf::json_io
