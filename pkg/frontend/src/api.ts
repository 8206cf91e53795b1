import { apiBase } from './config';

export interface NetworkSpecification {
  user_experienced_data_rate_mbps?: number | null;
  latency_ms?: number | null;
  mobility_kmph?: number | null;
  reliability_percentage?: number | null;
  connectivity_density_per_m2?: number | null;
  area_traffic_capacity_mbps_per_m2?: number | null;
  position_accuracy_cm?: number | null;
  peak_data_rate_gbps?: number | null;
}

export interface CommunicationProcess {
  id: string;
  name: string;
  description: string;
  is_real_time: boolean;
  direction: 'transmit' | 'receive';
  message_type: string;
  specification: NetworkSpecification;
}

export interface RadarAxes {
  order: string[];
  axes: Record<string, number>;
  raw: Record<string, number | null>;
  units: Record<string, string>;
}

export interface Violation {
  path: string;
  code: string;
  detail: string;
}

export interface ValidationReport {
  valid: boolean;
  violations: Violation[];
}

export interface SimilarUseCase {
  use_case_id: string;
  similarity: number;
  rank: number;
  name: string | null;
  description: string | null;
}

export interface SpecifyResponse {
  processes: CommunicationProcess[];
  radar: RadarAxes[];
  similar_use_cases: SimilarUseCase[];
  validation: ValidationReport;
  provider_id: string;
  retry_count: number;
  audit: string;
}

export interface Tally {
  up: number;
  down: number;
}

export interface UseCaseSummary {
  id: string;
  name: string;
  description: string;
  status: string;
  process_count: number;
  updated_at: string;
  tally: Tally;
  comment_count: number;
}

export interface UseCaseList {
  items: UseCaseSummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface CommentView {
  id: string;
  entity_id: string;
  author_handle: string;
  body: string;
  ts: string;
}

export interface UseCaseDetail {
  id: string;
  name: string;
  description: string;
  status: string;
  processes: CommunicationProcess[];
  tally: Tally;
  comments: CommentView[];
  radar: RadarAxes[];
}

export interface Screening {
  max_similarity: number;
  nearest_use_case_id: string | null;
  duplicate_flag: boolean;
  validation: ValidationReport;
}

export interface ContributionView {
  contribution_id: string;
  use_case_id: string;
  screening: Screening;
  decision: { state: string };
}

export interface ApiErrorBody {
  status: number;
  code: string;
  message: string;
  request_id?: string;
  details?: unknown;
}

export class ApiError extends Error {
  readonly body: ApiErrorBody;

  constructor(body: ApiErrorBody) {
    super(body.message);
    this.body = body;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${apiBase()}${path}`, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  if (!response.ok) {
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { status: response.status, code: 'internal_error', message: response.statusText };
    }
    throw new ApiError(body);
  }
  return (await response.json()) as T;
}

export interface SpecifyRequest {
  name: string;
  description: string;
  n?: number;
}

export function postSpecify(body: SpecifyRequest): Promise<SpecifyResponse> {
  return request('/specify', { method: 'POST', body: JSON.stringify(body) });
}

export function listUseCases(page = 1, pageSize = 20): Promise<UseCaseList> {
  return request(`/use-cases?page=${page}&page_size=${pageSize}`);
}

export function getUseCase(id: string): Promise<UseCaseDetail> {
  return request(`/use-cases/${encodeURIComponent(id)}`);
}

export interface ContributionDraft {
  name: string;
  description: string;
  contributor_handle: string;
  processes: Array<Omit<CommunicationProcess, 'id'>>;
}

export function contributeUseCase(draft: ContributionDraft): Promise<ContributionView> {
  return request('/use-cases', { method: 'POST', body: JSON.stringify(draft) });
}

export function castVote(
  useCaseId: string,
  voterHandle: string,
  value: 'up' | 'down',
): Promise<{ tally: Tally }> {
  return request(`/use-cases/${encodeURIComponent(useCaseId)}/votes`, {
    method: 'POST',
    body: JSON.stringify({ voter_handle: voterHandle, value }),
  });
}

export function postComment(
  useCaseId: string,
  authorHandle: string,
  body: string,
): Promise<{ comment_id: string }> {
  return request(`/use-cases/${encodeURIComponent(useCaseId)}/comments`, {
    method: 'POST',
    body: JSON.stringify({ author_handle: authorHandle, body }),
  });
}
