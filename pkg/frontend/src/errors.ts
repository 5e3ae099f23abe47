/** Catalog-driven error messages: every service code has an entry. */

export interface ErrorEntry {
  message: string;
  retryable: boolean;
}

export const ERROR_CATALOG: Record<string, ErrorEntry> = {
  "invalid-config": { message: "That input is not valid.", retryable: false },
  "not-found": { message: "Nothing stored under that id.", retryable: false },
  "session-not-ready": {
    message: "The session is still working; try again in a moment.",
    retryable: true,
  },
  "not-ready": {
    message: "That artifact has not been produced yet; try again in a moment.",
    retryable: true,
  },
  "round-cap-exceeded": {
    message: "This session reached its revision limit.",
    retryable: false,
  },
  "upstream-unavailable": {
    message: "An upstream service is unreachable; try again.",
    retryable: true,
  },
  "gateway-unavailable": {
    message: "The model backend is unreachable; try again.",
    retryable: true,
  },
  "timeout": { message: "The request timed out; try again.", retryable: true },
  "quota-exceeded": {
    message: "An upstream quota was exhausted; try again later.",
    retryable: true,
  },
  "internal-error": { message: "Something went wrong on the server.", retryable: false },
};

const FALLBACK: ErrorEntry = ERROR_CATALOG["internal-error"];

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export function catalogEntry(code: string): ErrorEntry {
  return ERROR_CATALOG[code] ?? FALLBACK;
}

/** Human text plus the verbatim machine code, per the error surface rule. */
export function describeError(err: ApiError): string {
  return `${catalogEntry(err.code).message} [${err.code}] ${err.message}`;
}

export function isRetryable(err: ApiError): boolean {
  return catalogEntry(err.code).retryable;
}
