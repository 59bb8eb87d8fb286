#pragma once

#include <string>

namespace fixtures {

// Loan application model: eligibility assessment with an optional
// return-and-resubmit loop, then either the acceptance pack or rejection.
inline const std::string kLoanTree =
    "->("
    "*(->('Check credit history','Assess loan risk','Assess eligibility'),"
    "->('Return application to applicant','Receive updated application')),"
    "X(->('Prepare acceptance pack','Send acceptance pack'),'Reject application'))";

}  // namespace fixtures
