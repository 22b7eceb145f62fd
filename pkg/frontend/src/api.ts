/** Typed client for the inference service.
 *
 * Every method returns the parsed response body untouched: the client adds
 * no derived numbers, so anything rendered from these objects is the
 * service's own output.
 */

import type {
  Attribution,
  Counterfactual,
  FeatureMap,
  ModelInfo,
  Prediction,
  Schema,
  ServiceError,
} from "./types.js";

/** Non-2xx response carrying the service's machine-readable error body. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ServiceError,
  ) {
    super(body.message);
    this.name = "ApiError";
  }

  /** Name of the offending field, when the service identified one. */
  get field(): string | null {
    return this.body.field ?? null;
  }
}

/** Network-level failure: the service could not be reached at all. */
export class ServiceUnreachableError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "ServiceUnreachableError";
    this.cause = cause;
  }
}

export interface PredictBody {
  features: FeatureMap;
  threshold?: number;
}

export interface CounterfactualBody {
  features: FeatureMap;
  threshold?: number;
  max_changes?: number;
}

export interface AttributionBody {
  features: FeatureMap;
  n_samples?: number;
  seed?: number;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(
    path: string,
    init?: RequestInit & { signal?: AbortSignal },
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ServiceUnreachableError(err);
    }
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ServiceError);
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }

  getSchema(): Promise<Schema> {
    return this.request<Schema>("/schema");
  }

  getModel(): Promise<ModelInfo> {
    return this.request<ModelInfo>("/model");
  }

  predict(body: PredictBody, signal?: AbortSignal): Promise<Prediction> {
    return this.post<Prediction>("/predict", body, signal);
  }

  counterfactual(
    body: CounterfactualBody,
    signal?: AbortSignal,
  ): Promise<Counterfactual> {
    return this.post<Counterfactual>("/counterfactual", body, signal);
  }

  attribution(body: AttributionBody, signal?: AbortSignal): Promise<Attribution> {
    return this.post<Attribution>("/attribution", body, signal);
  }
}
